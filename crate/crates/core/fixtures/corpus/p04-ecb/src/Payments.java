import javax.crypto.Cipher;
import javax.crypto.Mac;
import javax.crypto.SecretKey;

class Payments {
    byte[] seal(SecretKey key, byte[] card) throws Exception {
        Cipher c = Cipher.getInstance("AES/ECB/PKCS5Padding");
        c.init(Cipher.ENCRYPT_MODE, key);
        return c.doFinal(card);
    }

    byte[] tag(SecretKey key, byte[] msg) throws Exception {
        Mac mac = Mac.getInstance("HmacSHA256");
        mac.init(key);
        mac.update(msg);
        return mac.doFinal();
    }
}
